#pragma once

#include "polynomial.hpp"
#include "field.hpp"
#include "fit.hpp"
#include "classify.hpp"
#include "normalform.hpp"
#include "path.hpp"
#include "locus.hpp"
#include "eigenpath.hpp"
#include "propagate.hpp"
#include "oscillatory.hpp"
#include "experiments.hpp"
#include "io.hpp"
#include "run.hpp"
