#pragma once

#include "vbt/corpus.hpp"
#include "vbt/explore.hpp"
#include "vbt/hbgraph.hpp"
#include "vbt/permcover.hpp"
#include "vbt/random.hpp"
#include "vbt/report.hpp"
#include "vbt/scheduler.hpp"
#include "vbt/testkit.hpp"
#include "vbt/util.hpp"
