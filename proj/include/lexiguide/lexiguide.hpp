#pragma once

#include "lexiguide/attention.hpp"
#include "lexiguide/bridge_protocol.hpp"
#include "lexiguide/concept_eval.hpp"
#include "lexiguide/constraint_state.hpp"
#include "lexiguide/core.hpp"
#include "lexiguide/corpus.hpp"
#include "lexiguide/decode.hpp"
#include "lexiguide/extract.hpp"
#include "lexiguide/ngram.hpp"
#include "lexiguide/remote_scorer.hpp"
#include "lexiguide/report.hpp"
#include "lexiguide/scorer.hpp"
