#pragma once

#include "varstok/clustering.hpp"
#include "varstok/duration_coding.hpp"
#include "varstok/error.hpp"
#include "varstok/frontend.hpp"
#include "varstok/matrix.hpp"
#include "varstok/metrics.hpp"
#include "varstok/ngram.hpp"
#include "varstok/quantizer.hpp"
#include "varstok/token_stream.hpp"
#include "varstok/wav.hpp"
