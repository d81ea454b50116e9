#pragma once

#include "mixerlab/ablation.hpp"
#include "mixerlab/attention.hpp"
#include "mixerlab/bench.hpp"
#include "mixerlab/blocks.hpp"
#include "mixerlab/costs.hpp"
#include "mixerlab/diag.hpp"
#include "mixerlab/matrix.hpp"
#include "mixerlab/numerics.hpp"
#include "mixerlab/posenc.hpp"
#include "mixerlab/reports.hpp"
#include "mixerlab/scan.hpp"
#include "mixerlab/ssm.hpp"
#include "mixerlab/unified.hpp"
#include "mixerlab/verify.hpp"
