#pragma once

#include "srank/batching.hpp"
#include "srank/checkpoint.hpp"
#include "srank/config.hpp"
#include "srank/data.hpp"
#include "srank/embedding_store.hpp"
#include "srank/encoder.hpp"
#include "srank/error.hpp"
#include "srank/evalbench.hpp"
#include "srank/losses.hpp"
#include "srank/metrics.hpp"
#include "srank/numerics.hpp"
#include "srank/ranker.hpp"
#include "srank/report.hpp"
#include "srank/training.hpp"
#include "srank/verify.hpp"
