#pragma once

#include <iosfwd>
#include <string>

#include "fracperm/matrix.hpp"

namespace fracperm {

enum class MatrixFormat { dense_text, sparse_triplet };

/// Parse "dense" / "sparse" (also "dense-text" / "sparse-triplet").
MatrixFormat parse_matrix_format(const std::string& name);

/// Dense text: first token n, then n*n whitespace separated values.
/// Sparse triplet: first token n, then "i j value" lines, zero-indexed.
WeightMatrix read_matrix(std::istream& in, MatrixFormat format);
WeightMatrix load_matrix(const std::string& path, MatrixFormat format);

/// Floats are written with 17 significant digits.
void write_matrix(std::ostream& out, const WeightMatrix& p, MatrixFormat format);
void save_matrix(const std::string& path, const WeightMatrix& p, MatrixFormat format);

}  // namespace fracperm
