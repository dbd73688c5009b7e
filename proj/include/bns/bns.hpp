#pragma once

#include "bns/adamw.hpp"
#include "bns/autograd.hpp"
#include "bns/behavior_segmentation.hpp"
#include "bns/checkpoint.hpp"
#include "bns/config.hpp"
#include "bns/data_io.hpp"
#include "bns/error.hpp"
#include "bns/gradcheck.hpp"
#include "bns/gradient_suite.hpp"
#include "bns/layers.hpp"
#include "bns/metrics.hpp"
#include "bns/model.hpp"
#include "bns/ops.hpp"
#include "bns/random.hpp"
#include "bns/sentence_reconstruction.hpp"
#include "bns/tensor.hpp"
#include "bns/text_pipeline.hpp"
#include "bns/train_eval.hpp"
