#pragma once

#include "convex.hpp"
#include "des.hpp"
#include "erlang.hpp"
#include "es_delay.hpp"
#include "markov_channel.hpp"
#include "planner.hpp"
#include "pmf.hpp"
#include "power.hpp"
#include "scenario.hpp"
#include "stats.hpp"
#include "report.hpp"
#include "sweep.hpp"
