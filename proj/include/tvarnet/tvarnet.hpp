#pragma once

#include "tvarnet/admm.hpp"
#include "tvarnet/analysis.hpp"
#include "tvarnet/design.hpp"
#include "tvarnet/errors.hpp"
#include "tvarnet/io.hpp"
#include "tvarnet/model.hpp"
#include "tvarnet/model_selection.hpp"
#include "tvarnet/series.hpp"
#include "tvarnet/simulate.hpp"
#include "tvarnet/windowing.hpp"
