#ifndef KTRACE_KTRACE_HPP
#define KTRACE_KTRACE_HPP

#include "ktrace/operator.hpp"
#include "ktrace/sparse.hpp"
#include "ktrace/spectral.hpp"
#include "ktrace/dixmier.hpp"
#include "ktrace/kcycle.hpp"
#include "ktrace/forms.hpp"
#include "ktrace/models.hpp"
#include "ktrace/random.hpp"

#endif  // KTRACE_KTRACE_HPP
