#pragma once

#include "kaas/attention.hpp"
#include "kaas/commands.hpp"
#include "kaas/community.hpp"
#include "kaas/corpus.hpp"
#include "kaas/dataset.hpp"
#include "kaas/embedding.hpp"
#include "kaas/encoder.hpp"
#include "kaas/error.hpp"
#include "kaas/experiment.hpp"
#include "kaas/linalg.hpp"
#include "kaas/metrics.hpp"
#include "kaas/model.hpp"
#include "kaas/synth.hpp"
#include "kaas/training.hpp"
