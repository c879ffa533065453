#ifndef NETCONFORM_NETCONFORM_HPP
#define NETCONFORM_NETCONFORM_HPP

#include "netconform/error.hpp"
#include "netconform/rng.hpp"
#include "netconform/linalg.hpp"
#include "netconform/graph.hpp"
#include "netconform/covariates.hpp"
#include "netconform/graphgen.hpp"
#include "netconform/stats.hpp"
#include "netconform/regress.hpp"
#include "netconform/conformal.hpp"
#include "netconform/experiments.hpp"
#include "netconform/io.hpp"
#include "netconform/config.hpp"
#include "netconform/cli.hpp"

#endif  // NETCONFORM_NETCONFORM_HPP
