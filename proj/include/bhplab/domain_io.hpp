#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bhplab/geometry.hpp"

namespace bhplab {

/// Names of the built-in domains, in listing order.
std::vector<std::string> list_domains();

/// Built-in domain by name. Throws ConfigError for an unknown name.
///
///   square       [0,1]^2
///   slit_square  [0,1]^2 minus the slit (0,0.5)-(0.5,0.5)
///   comb_3       [0,1]^2 minus vertical slits at x = 0.25, 0.5, 0.75 for y <= 0.75
///   L_shape      [0,1]x[0,0.5] union [0,0.5]x[0,1]
///   double_slit  [0,1]^2 minus (0,0.375)-(0.625,0.375) and (0.375,0.625)-(1,0.625)
///   big_square   [-1,1]^2
Domain preset_domain(std::string_view name);

/// Text format:
///
///     name = slit_square
///     [rectangles]
///     0 0 1 1
///     [slits]
///     0 0.5 0.5 0.5
///
/// '#' starts a comment. Throws ParseError.
Domain parse_domain(std::string_view text);
Domain read_domain(const std::string& path);

/// Shortest round-trip decimal form; parse_domain(format_domain(d)) == d.
std::string format_domain(const Domain& domain);
void write_domain(const Domain& domain, const std::string& path);

/// "preset:NAME" or a file path.
Domain load_domain(const std::string& spec);

}  // namespace bhplab
