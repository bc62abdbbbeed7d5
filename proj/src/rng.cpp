// Header-only implementation; this TU exists so the header is always
// compiled standalone at least once.
#include "qgraph/rng.hpp"
