// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include "sbfit/error.hpp"
#include "sbfit/rng.hpp"
#include "sbfit/special.hpp"
#include "sbfit/distributions.hpp"
#include "sbfit/ars.hpp"
#include "sbfit/mh.hpp"
#include "sbfit/jsb_bayes.hpp"
#include "sbfit/weibull_bayes.hpp"
#include "sbfit/gof.hpp"
#include "sbfit/ml_jsb.hpp"
#include "sbfit/parallel.hpp"
#include "sbfit/experiments.hpp"
#include "sbfit/io.hpp"
#include "sbfit/cli.hpp"
