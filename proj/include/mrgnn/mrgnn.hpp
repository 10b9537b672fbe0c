#pragma once

#include "mrgnn/aggregation.hpp"
#include "mrgnn/commands.hpp"
#include "mrgnn/config.hpp"
#include "mrgnn/errors.hpp"
#include "mrgnn/format.hpp"
#include "mrgnn/graph.hpp"
#include "mrgnn/graph_io.hpp"
#include "mrgnn/metrics.hpp"
#include "mrgnn/model.hpp"
#include "mrgnn/neighbor_selector.hpp"
#include "mrgnn/policies.hpp"
#include "mrgnn/rsrl.hpp"
#include "mrgnn/similarity.hpp"
#include "mrgnn/synthetic.hpp"
#include "mrgnn/tensor.hpp"
#include "mrgnn/trace.hpp"
#include "mrgnn/trainer.hpp"
