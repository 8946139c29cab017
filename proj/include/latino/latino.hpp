#pragma once

#include "latino/equiv_hr.hpp"
#include "latino/error.hpp"
#include "latino/fft.hpp"
#include "latino/harness/config.hpp"
#include "latino/harness/conjugate.hpp"
#include "latino/harness/echo_server.hpp"
#include "latino/harness/image_io.hpp"
#include "latino/harness/metrics.hpp"
#include "latino/harness/runner.hpp"
#include "latino/harness/tensor_io.hpp"
#include "latino/harness/test_image.hpp"
#include "latino/operators/degradation.hpp"
#include "latino/proximal.hpp"
#include "latino/rng.hpp"
#include "latino/sae/analytic_prior.hpp"
#include "latino/sae/remote_prior.hpp"
#include "latino/sae/sae.hpp"
#include "latino/sampler.hpp"
#include "latino/sapg.hpp"
#include "latino/tensor.hpp"
