#include "adlearn/lp/simplex.hpp"

namespace adl::lp {

template class SimplexSolver<double>;

}  // namespace adl::lp
