#pragma once

#include "hazardstream/accumulator.hpp"
#include "hazardstream/data.hpp"
#include "hazardstream/errors.hpp"
#include "hazardstream/estimator.hpp"
#include "hazardstream/eval.hpp"
#include "hazardstream/hazard.hpp"
#include "hazardstream/io.hpp"
#include "hazardstream/kernel.hpp"
#include "hazardstream/mechanism.hpp"
#include "hazardstream/simulator.hpp"
