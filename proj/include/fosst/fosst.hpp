#pragma once

#include "fosst/core_model.hpp"
#include "fosst/def.hpp"
#include "fosst/errors.hpp"
#include "fosst/filter.hpp"
#include "fosst/multichannel.hpp"
#include "fosst/pipeline.hpp"
#include "fosst/ridge.hpp"
#include "fosst/synth.hpp"
#include "fosst/tfr.hpp"
#include "fosst/window.hpp"
