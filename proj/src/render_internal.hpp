#pragma once

#include "facetrace/render.hpp"

namespace facetrace {

std::unique_ptr<DiffRenderer> make_raytrace_renderer(const MorphableBasis& basis);
std::unique_ptr<DiffRenderer> make_vertex_renderer(const MorphableBasis& basis);

} // namespace facetrace
