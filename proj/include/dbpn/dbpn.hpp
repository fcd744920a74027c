// SPDX-License-Identifier: Apache-2.0
#pragma once

// Convenience umbrella: the whole library.

#include "dbpn/autodiff.hpp"
#include "dbpn/checkpoint.hpp"
#include "dbpn/common.hpp"
#include "dbpn/conv.hpp"
#include "dbpn/gradcheck.hpp"
#include "dbpn/ibp.hpp"
#include "dbpn/image.hpp"
#include "dbpn/image_io.hpp"
#include "dbpn/init.hpp"
#include "dbpn/metrics.hpp"
#include "dbpn/network.hpp"
#include "dbpn/ops.hpp"
#include "dbpn/optim.hpp"
#include "dbpn/projection.hpp"
#include "dbpn/resample.hpp"
#include "dbpn/rng.hpp"
#include "dbpn/tensor.hpp"
#include "dbpn/train.hpp"
