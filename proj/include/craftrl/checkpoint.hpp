#pragma once
#include <istream>
#include <ostream>

#include "craftrl/world.hpp"

namespace craftrl {

void save_world(std::ostream& os, const WorldState& s);
WorldState load_world(std::istream& is);

}  // namespace craftrl
