#pragma once

#include "clusterpower/csv.hpp"
#include "clusterpower/error.hpp"
#include "clusterpower/flsim/dataset.hpp"
#include "clusterpower/flsim/energy.hpp"
#include "clusterpower/flsim/learner.hpp"
#include "clusterpower/flsim/simulator.hpp"
#include "clusterpower/msr.hpp"
#include "clusterpower/powermodel.hpp"
#include "clusterpower/profile.hpp"
#include "clusterpower/railmap.hpp"
#include "clusterpower/reference_devices.hpp"
#include "clusterpower/trace_io.hpp"
#include "clusterpower/traces.hpp"
