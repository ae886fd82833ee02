#pragma once

// Umbrella header for the similar-product recommendation library. The HTTP
// layer lives in simrec/http_server.hpp and is not pulled in here.

#include "simrec/cf.hpp"
#include "simrec/config.hpp"
#include "simrec/eval.hpp"
#include "simrec/ingest.hpp"
#include "simrec/item2vec.hpp"
#include "simrec/personalized.hpp"
#include "simrec/pipeline.hpp"
#include "simrec/pool.hpp"
#include "simrec/rng.hpp"
#include "simrec/serve.hpp"
#include "simrec/synth.hpp"
#include "simrec/textio.hpp"
#include "simrec/types.hpp"
#include "simrec/vectors.hpp"
