#pragma once

// Loop-nest DSL (`.loop` files).
//
//   param N = 16;
//   array A[N, N];
//   array s[1] : int;
//   for i in 0..N {
//     for j in 0..i+1 {
//       A[i, j] += s[0] * 2;
//     }
//   }
//
// Upper bounds are exclusive. `+=` is sugar for a read of the written cell
// plus an addition. Extensions used by transformed programs: labels
// (`S3: A[i] = 0;`), bound forms `min(a, b)` and `ceildiv(a, k)`, loop
// attributes `@parallel` / `@vectorize`, index values `idx(2*i+1)` and call
// nodes `call gemm(C, A, B) { ...reference... }`.

#include <string>
#include <string_view>

#include "loopnorm/ir.hpp"

namespace loopnorm {

/// Parses and validates DSL text. Throws ParseError with a SourceSpan.
Program parse(std::string_view text, const std::string& filename = "");

/// Reads and parses a `.loop` file.
Program parse_file(const std::string& path);

/// Renders a program as DSL text accepted by parse().
std::string pretty_print(const Program& program);

/// Compact affine rendering used by the DSL, e.g. "2*i+N-1".
std::string affine_text(const AffineExpr& e);

}  // namespace loopnorm
