#pragma once

#include "riot/engine.hpp"
#include "riot/error.hpp"
#include "riot/evaluation.hpp"
#include "riot/fusion.hpp"
#include "riot/gradient.hpp"
#include "riot/mock_provider.hpp"
#include "riot/providers.hpp"
#include "riot/scoring.hpp"
#include "riot/segmentation.hpp"
#include "riot/similarity.hpp"
#include "riot/tree_io.hpp"
