#pragma once

// Umbrella header for the semantic token coding library.

#include "semcode/attention.hpp"
#include "semcode/bitio.hpp"
#include "semcode/channel.hpp"
#include "semcode/config.hpp"
#include "semcode/error.hpp"
#include "semcode/harness.hpp"
#include "semcode/image.hpp"
#include "semcode/metrics.hpp"
#include "semcode/plot.hpp"
#include "semcode/quantizer.hpp"
#include "semcode/reorganizer.hpp"
#include "semcode/rng.hpp"
#include "semcode/tokenizer.hpp"
#include "semcode/transceiver.hpp"
