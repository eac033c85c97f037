#ifndef OPO_NG_HPP
#define OPO_NG_HPP

#include "opo_ng/cmat2.hpp"
#include "opo_ng/config.hpp"
#include "opo_ng/errors.hpp"
#include "opo_ng/fit.hpp"
#include "opo_ng/intracavity.hpp"
#include "opo_ng/kurtosis.hpp"
#include "opo_ng/linear.hpp"
#include "opo_ng/mc.hpp"
#include "opo_ng/model.hpp"
#include "opo_ng/perturbation.hpp"
#include "opo_ng/quadrature.hpp"

#endif
