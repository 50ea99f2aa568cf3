#pragma once

#include "retro/errors.hpp"
#include "retro/rng.hpp"
#include "retro/linalg.hpp"
#include "retro/gates.hpp"
#include "retro/probability_table.hpp"
#include "retro/channels.hpp"
#include "retro/purify.hpp"
#include "retro/inference.hpp"
#include "retro/identities.hpp"
#include "retro/task.hpp"
#include "retro/sampler.hpp"
#include "retro/io.hpp"
#include "retro/scenario.hpp"
