#pragma once
// Umbrella header: the full spatial-feature laboratory.

#include "rirsf/common.hpp"
#include "rirsf/eval.hpp"
#include "rirsf/features.hpp"
#include "rirsf/fft.hpp"
#include "rirsf/io.hpp"
#include "rirsf/mix.hpp"
#include "rirsf/room.hpp"
#include "rirsf/stft.hpp"
