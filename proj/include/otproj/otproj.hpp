#pragma once

#include "otproj/entropic_ot.hpp"
#include "otproj/estimators.hpp"
#include "otproj/exact_ot.hpp"
#include "otproj/finite_inference.hpp"
#include "otproj/finite_lp.hpp"
#include "otproj/harness.hpp"
#include "otproj/io.hpp"
#include "otproj/measures.hpp"
#include "otproj/rng.hpp"
#include "otproj/shadow.hpp"
#include "otproj/simplex.hpp"
#include "otproj/threads.hpp"
