#pragma once

// Umbrella header: the whole library.

#include "sobd/base.hpp"
#include "sobd/boundaries.hpp"
#include "sobd/channels.hpp"
#include "sobd/dense_sift.hpp"
#include "sobd/edge_forest.hpp"
#include "sobd/edge_tree.hpp"
#include "sobd/fisher.hpp"
#include "sobd/fusion.hpp"
#include "sobd/gating.hpp"
#include "sobd/gmm.hpp"
#include "sobd/image.hpp"
#include "sobd/kmeans.hpp"
#include "sobd/linalg.hpp"
#include "sobd/manifest.hpp"
#include "sobd/matching.hpp"
#include "sobd/model_io.hpp"
#include "sobd/parallel.hpp"
#include "sobd/patches.hpp"
#include "sobd/pca.hpp"
#include "sobd/pipeline.hpp"
#include "sobd/png_io.hpp"
#include "sobd/pr_eval.hpp"
#include "sobd/random.hpp"
#include "sobd/situations.hpp"
#include "sobd/svm_sgd.hpp"
#include "sobd/synthgen.hpp"
