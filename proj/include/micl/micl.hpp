#pragma once

// Umbrella header. The HTTP client lives in micl/http_client.hpp and is not
// pulled in here; include it explicitly where a wire client is needed.

#include "micl/config.hpp"
#include "micl/coreset.hpp"
#include "micl/embedding.hpp"
#include "micl/error.hpp"
#include "micl/eval.hpp"
#include "micl/experience_bank.hpp"
#include "micl/model_client.hpp"
#include "micl/oracle.hpp"
#include "micl/prompt.hpp"
#include "micl/rng.hpp"
#include "micl/selection.hpp"
#include "micl/sres.hpp"
#include "micl/synthetic.hpp"
#include "micl/task.hpp"
#include "micl/templates.hpp"
