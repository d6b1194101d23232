#ifndef MLM_MLM_HPP
#define MLM_MLM_HPP

#include "mlm/core.hpp"
#include "mlm/evaluation.hpp"
#include "mlm/io.hpp"
#include "mlm/prediction.hpp"
#include "mlm/refselect.hpp"
#include "mlm/rng.hpp"
#include "mlm/scaling.hpp"
#include "mlm/serialization.hpp"
#include "mlm/training.hpp"

#endif
