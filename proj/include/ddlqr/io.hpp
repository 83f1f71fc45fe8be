#pragma once

// Plain-text matrix files: one row per line, comma separated, %.17g so that
// a write/read round trip is exact.

#include <string>

#include "ddlqr/linalg.hpp"

namespace ddlqr {

/// printf-style %.17g.
[[nodiscard]] std::string format_double(double v);

void write_matrix_csv(const std::string& path, const Matrix& m);

/// Throws InvalidArgument on a missing file, ragged rows or a bad number.
[[nodiscard]] Matrix read_matrix_csv(const std::string& path);

}  // namespace ddlqr
