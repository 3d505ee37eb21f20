#include "riot/evaluation.hpp"
#include "riot/mock_provider.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

using riot::AnswerFormat;
using riot::AnswerSpec;

namespace {

AnswerSpec spec(AnswerFormat f) {
  AnswerSpec s;
  s.format = f;
  return s;
}

riot::ErrorKind kind_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const riot::Error &e) {
    return e.kind();
  }
  return riot::ErrorKind::InvalidArgument;
}

} // namespace

TEST(ExtractAnswer, TrueFalse) {
  EXPECT_EQ(riot::extract_answer("...reasoning...\nAnswer: YES", spec(AnswerFormat::TrueFalse)), "YES");
  EXPECT_EQ(riot::extract_answer("Answer: no", spec(AnswerFormat::TrueFalse)), "NO");
  EXPECT_EQ(riot::extract_answer("**Answer:** True", spec(AnswerFormat::TrueFalse)), "YES");
}

TEST(ExtractAnswer, NumericStripsCurrency) {
  EXPECT_EQ(riot::extract_answer("Answer: $108", spec(AnswerFormat::Numeric)), "108");
  EXPECT_EQ(riot::extract_answer("so...\nanswer: 1,250.50 dollars", spec(AnswerFormat::Numeric)), "1250.50");
  EXPECT_EQ(riot::extract_answer("Answer: -7", spec(AnswerFormat::Numeric)), "-7");
}

TEST(ExtractAnswer, MultipleChoiceLetter) {
  EXPECT_EQ(riot::extract_answer("Thanksgiving is ...\nAnswer: E", spec(AnswerFormat::MultipleChoice)), "E");
  EXPECT_EQ(riot::extract_answer("Answer: (b)", spec(AnswerFormat::MultipleChoice)), "B");
}

TEST(ExtractAnswer, LastMarkerWins) {
  EXPECT_EQ(riot::extract_answer("Answer: 3\nwait, recheck\nAnswer: 4", spec(AnswerFormat::Numeric)), "4");
}

TEST(ExtractAnswer, MissingMarkerIsNoAnswer) {
  EXPECT_FALSE(riot::extract_answer("The answer is unclear.", spec(AnswerFormat::TrueFalse)).has_value());
  EXPECT_FALSE(riot::extract_answer("", spec(AnswerFormat::Numeric)).has_value());
  EXPECT_FALSE(riot::extract_answer("Answer: maybe", spec(AnswerFormat::TrueFalse)).has_value());
}

TEST(ExtractAnswer, TotalOnRandomGarbage) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 2000; ++t) {
    std::string s(rng() % 200, '\0');
    for (auto &c : s) {
      c = static_cast<char>(rng() % 256);
    }
    if (t % 3 == 0) {
      s.insert(rng() % (s.size() + 1), "Answer:");
    }
    for (auto f : {AnswerFormat::TrueFalse, AnswerFormat::Numeric, AnswerFormat::MultipleChoice}) {
      EXPECT_NO_THROW((void)riot::extract_answer(s, spec(f)));
    }
  }
}

TEST(ScoreSample, Normalization) {
  EXPECT_TRUE(riot::score_sample(std::string("YES"), "Yes", spec(AnswerFormat::TrueFalse)));
  EXPECT_TRUE(riot::score_sample(std::string("108"), "108", spec(AnswerFormat::Numeric)));
  EXPECT_TRUE(riot::score_sample(std::string("108.0"), "108", spec(AnswerFormat::Numeric)));
  EXPECT_TRUE(riot::score_sample(std::string("E"), "E", spec(AnswerFormat::MultipleChoice)));
  EXPECT_FALSE(riot::score_sample(std::nullopt, "E", spec(AnswerFormat::MultipleChoice)));
  EXPECT_FALSE(riot::score_sample(std::string("107"), "108", spec(AnswerFormat::Numeric)));
}

TEST(Forward, MockPassthrough) {
  riot::MockProvider mock(0);
  mock.set_canned_response("Answer: YES");
  const std::vector<riot::TaskSample> one{{"q1", "Is it?", "YES", {}}};
  const auto r = riot::forward("p", one, mock);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].text, "Answer: YES");
}

TEST(Forward, BatchOfFourGivesFourResponses) {
  riot::MockProvider mock(0);
  const auto d = riot::testing::synthetic_dataset(4, 0, 0);
  EXPECT_EQ(riot::forward("p", d.train, mock, 4).size(), 4u);
}

TEST(Forward, FailureBecomesMarkerInPlace) {
  riot::testing::ScriptedProvider p;
  p.on_chat = [](std::span<const riot::Message> m, auto) -> std::string {
    if (m.back().content.find("second") != std::string::npos) {
      throw riot::Error(riot::ErrorKind::Backend, "boom");
    }
    return "Answer: 1";
  };
  const std::vector<riot::TaskSample> batch{{"a", "first", "1", {}}, {"b", "second", "1", {}}, {"c", "third", "1", {}}};
  const auto r = riot::forward("p", batch, p, 2);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_FALSE(r[0].error);
  ASSERT_TRUE(r[1].error);
  EXPECT_NE(r[1].error->find("boom"), std::string::npos);
  EXPECT_FALSE(r[2].error);
  const auto records = riot::score_responses(batch, r, spec(AnswerFormat::Numeric));
  EXPECT_FALSE(records[1].correct);
  EXPECT_NEAR(riot::accuracy_of(records), 2.0 / 3.0, 1e-15);
}

TEST(Forward, EmptyBatchIsAnError) {
  riot::MockProvider mock(0);
  EXPECT_EQ(kind_of([&] { (void)riot::forward("p", std::vector<riot::TaskSample>{}, mock); }),
            riot::ErrorKind::EmptyBatch);
}

TEST(Evaluate, OracleMockIsPerfect) {
  const auto d = riot::testing::synthetic_dataset(0, 0, 10);
  riot::MockProvider mock(4);
  mock.set_answer_key(riot::make_answer_key(d));
  mock.set_answer_policy(riot::MockAnswerPolicy::Oracle);
  EXPECT_EQ(riot::evaluate("p", d.test, mock, d.answer_spec, 4).accuracy, 1.0);
}

TEST(Evaluate, AlternatingMockIsHalf) {
  const auto d = riot::testing::synthetic_dataset(0, 0, 10);
  riot::MockProvider mock(4);
  mock.set_answer_key(riot::make_answer_key(d));
  mock.set_answer_policy(riot::MockAnswerPolicy::Alternating);
  const auto r = riot::evaluate("p", d.test, mock, d.answer_spec, 3);
  EXPECT_EQ(r.accuracy, 0.5);
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    EXPECT_EQ(r.records[i].id, d.test[i].id); // input order regardless of parallelism
  }
}

TEST(Evaluate, HundredSamplesHundredRecordsAndBitStable) {
  const auto d = riot::testing::synthetic_dataset(0, 0, 100);
  riot::MockProvider mock(9);
  mock.set_answer_key(riot::make_answer_key(d));
  const auto a = riot::evaluate("Some prompt.", d.test, mock, d.answer_spec, 8);
  const auto b = riot::evaluate("Some prompt.", d.test, mock, d.answer_spec, 1);
  EXPECT_EQ(a.records.size(), 100u);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(riot::to_json(a).dump(), riot::to_json(b).dump());
  std::size_t correct = 0;
  for (const auto &r : a.records) {
    correct += r.correct ? 1 : 0;
  }
  EXPECT_EQ(a.accuracy, static_cast<double>(correct) / 100.0);
}

TEST(Evaluate, EmptySamplesIsAnError) {
  riot::MockProvider mock(0);
  EXPECT_EQ(kind_of([&] { (void)riot::evaluate("p", std::vector<riot::TaskSample>{}, mock, {}); }),
            riot::ErrorKind::EmptyInput);
}

TEST(Waa, BenchmarkRowsRoundToOneDecimal) {
  const std::vector<riot::DatasetAccuracy> riot_row{{160, 61.4}, {100, 74.6}, {210, 86.9}, {100, 81.2}, {329, 78.2}};
  const std::vector<riot::DatasetAccuracy> zero_shot{{160, 59.0}, {100, 65.8}, {210, 71.0}, {100, 60.2}, {329, 76.1}};
  // Independent oracle: the weighted sum written out.
  const double expect_riot = (160 * 61.4 + 100 * 74.6 + 210 * 86.9 + 100 * 81.2 + 329 * 78.2) / 899.0;
  const double expect_zero = (160 * 59.0 + 100 * 65.8 + 210 * 71.0 + 100 * 60.2 + 329 * 76.1) / 899.0;
  const double a = riot::weighted_average_accuracy(riot_row);
  const double b = riot::weighted_average_accuracy(zero_shot);
  EXPECT_NEAR(a, expect_riot, 1e-9);
  EXPECT_NEAR(b, expect_zero, 1e-9);
  EXPECT_NEAR(a, 77.2, 0.05);
  EXPECT_NEAR(b, 69.0, 0.05);
  EXPECT_NEAR(std::round(a * 10) / 10 - std::round(b * 10) / 10, 8.2, 1e-9);
}

TEST(Waa, Properties) {
  EXPECT_EQ(riot::weighted_average_accuracy(std::vector<riot::DatasetAccuracy>{{10, 50.0}}), 50.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> acc(0, 100);
  for (int t = 0; t < 200; ++t) {
    std::vector<riot::DatasetAccuracy> rows;
    const double same = acc(rng);
    std::vector<riot::DatasetAccuracy> flat;
    double lo = 100;
    double hi = 0;
    for (int i = 0; i < 1 + t % 6; ++i) {
      rows.push_back({1 + rng() % 500, acc(rng)});
      flat.push_back({1 + rng() % 500, same});
      lo = std::min(lo, rows.back().accuracy);
      hi = std::max(hi, rows.back().accuracy);
    }
    const double w = riot::weighted_average_accuracy(rows);
    EXPECT_GE(w, lo - 1e-9);
    EXPECT_LE(w, hi + 1e-9);
    EXPECT_NEAR(riot::weighted_average_accuracy(flat), same, 1e-9);
  }
  EXPECT_EQ(kind_of([] { (void)riot::weighted_average_accuracy(std::vector<riot::DatasetAccuracy>{}); }),
            riot::ErrorKind::EmptyInput);
}

TEST(MeanStd, SampleStandardDeviation) {
  const std::vector<double> v{60, 70, 80, 60, 80};
  const auto s = riot::mean_and_sample_std(v);
  EXPECT_DOUBLE_EQ(s.mean, 70.0);
  EXPECT_DOUBLE_EQ(s.stddev, 10.0);
  EXPECT_EQ(riot::mean_and_sample_std(std::vector<double>{5}).stddev, 0.0);
}

TEST(Datasets, SizesFollowTheFiles) {
  riot::testing::TempDir dir;
  const auto manifest = riot::testing::write_dataset(dir / "gsm", riot::testing::synthetic_dataset(20, 20, 100));
  const auto d = riot::load_dataset(manifest);
  EXPECT_EQ(d.train.size(), 20u);
  EXPECT_EQ(d.validation.size(), 20u);
  EXPECT_EQ(d.test.size(), 100u);
  EXPECT_EQ(d.answer_spec.format, AnswerFormat::Numeric);
}

TEST(Datasets, MissingAnswerIsSchemaErrorAtThatLine) {
  riot::testing::TempDir dir;
  riot::testing::write_text(dir / "s.jsonl", "{\"id\":\"a\",\"question\":\"q\",\"answer\":\"1\"}\n"
                                             "{\"id\":\"b\",\"question\":\"q\"}\n");
  try {
    (void)riot::load_split(dir / "s.jsonl");
    FAIL();
  } catch (const riot::Error &e) {
    EXPECT_EQ(e.kind(), riot::ErrorKind::Schema);
    EXPECT_NE(std::string(e.what()).find("s.jsonl:2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("answer"), std::string::npos);
  }
}

TEST(Datasets, BrokenJsonIsParseError) {
  riot::testing::TempDir dir;
  riot::testing::write_text(dir / "s.jsonl", "{not json}\n");
  EXPECT_EQ(kind_of([&] { (void)riot::load_split(dir / "s.jsonl"); }), riot::ErrorKind::Parse);
}

TEST(Datasets, SixChoiceDateTaskWith329TestSamples) {
  riot::testing::TempDir dir;
  riot::Dataset d;
  d.name = "date";
  d.answer_spec.format = AnswerFormat::MultipleChoice;
  for (int i = 0; i < 329; ++i) {
    riot::TaskSample s{"date-" + std::to_string(i), "Today is Thanksgiving. What is the date one week from today?",
                       std::string(1, static_cast<char>('A' + i % 6)), {}};
    for (char c = 'A'; c <= 'F'; ++c) {
      s.choices.push_back({std::string(1, c), "11/" + std::to_string(20 + (c - 'A')) + "/2001"});
    }
    d.test.push_back(std::move(s));
  }
  const auto loaded = riot::load_dataset(riot::testing::write_dataset(dir / "date", d));
  EXPECT_EQ(loaded.answer_spec.format, AnswerFormat::MultipleChoice);
  ASSERT_EQ(loaded.test.size(), 329u);
  for (const auto &s : loaded.test) {
    EXPECT_EQ(s.choices.size(), 6u);
  }
  EXPECT_NE(riot::render_query(loaded.test[0]).find("F. 11/25/2001"), std::string::npos);
}

TEST(Datasets, ShippedFixturesLoad) {
  for (const char *name : {"gsm_synth", "yesno_synth", "date_synth"}) {
    const auto d = riot::load_dataset(riot::testing::source_dir() / "data/fixtures" / name / "manifest.json");
    EXPECT_EQ(d.train.size(), 20u) << name;
    EXPECT_EQ(d.validation.size(), 20u) << name;
    EXPECT_EQ(d.test.size(), 10u) << name;
  }
}
