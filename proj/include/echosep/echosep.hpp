#pragma once

#include "echosep/audio_io.hpp"
#include "echosep/bss_eval.hpp"
#include "echosep/echo_model.hpp"
#include "echosep/em_separator.hpp"
#include "echosep/experiment.hpp"
#include "echosep/geometry.hpp"
#include "echosep/mu_separator.hpp"
#include "echosep/nmf.hpp"
#include "echosep/rir.hpp"
#include "echosep/serialization.hpp"
#include "echosep/stft.hpp"
#include "echosep/synth_corpus.hpp"
