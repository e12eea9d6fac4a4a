#pragma once

#include "intendd/alpha_search.hpp"
#include "intendd/classifier.hpp"
#include "intendd/corpus.hpp"
#include "intendd/discovery.hpp"
#include "intendd/error.hpp"
#include "intendd/feature_select.hpp"
#include "intendd/graph.hpp"
#include "intendd/keyphrase.hpp"
#include "intendd/log.hpp"
#include "intendd/louvain.hpp"
#include "intendd/mad.hpp"
#include "intendd/metrics.hpp"
