#pragma once

// Versioned JSON interchange format for programs.
//
//   {"version": 1, "parameters": [...], "arrays": [...], "body": [...]}
//
// Loop nodes are {"loop": {"iter", "lo", "hi", "body"}}, computations are
// {"comp": {"id", "write", "reads", "expr"}}, affine expressions are
// {"terms": {"i": 1}, "const": 3}. Field order is irrelevant; unknown fields
// are rejected.

#include <string>
#include <string_view>

#include "json.hpp"
#include "loopnorm/ir.hpp"

namespace loopnorm {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

Json to_json(const AffineExpr& e);
Json to_json(const Access& a);
Json to_json(const Expr& e);
Json to_json(const Body& body);
Json to_json(const Program& p);

/// Serialized interchange text (2-space indent, trailing newline).
std::string serialize(const Program& p);

AffineExpr affine_from_json(const Json& j, const std::string& where = "$");
Body body_from_json(const Json& j, const std::string& where = "$");
Program program_from_json(const Json& j);

/// Parses interchange text. Throws FormatError with a byte offset for syntax
/// errors and a JSON path for schema errors (unknown or missing fields).
Program deserialize(std::string_view text);

/// Parses JSON text, mapping syntax errors to FormatError.
Json parse_json(std::string_view text);

/// Throws FormatError if `j` is not an object or contains a key outside
/// `allowed`.
void expect_fields(const Json& j, std::initializer_list<std::string_view> allowed,
                   const std::string& where);

}  // namespace loopnorm
