#pragma once

#include "nss/amp.hpp"
#include "nss/bp.hpp"
#include "nss/common.hpp"
#include "nss/exact_oracle.hpp"
#include "nss/free_entropy.hpp"
#include "nss/graph.hpp"
#include "nss/inference.hpp"
#include "nss/metrics.hpp"
#include "nss/observation.hpp"
#include "nss/perceptron.hpp"
#include "nss/spreading.hpp"
#include "nss/validation.hpp"
