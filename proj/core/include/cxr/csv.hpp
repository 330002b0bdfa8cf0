#pragma once

#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cxr::csv {

using Row = std::vector<std::string>;

/// Splits comma-separated text into rows of fields.
///
/// Double-quoted fields may contain commas, newlines and `""` escapes.
/// Accepts LF and CRLF line endings, strips a leading UTF-8 byte order mark
/// and skips blank lines. Throws ParseError on an unterminated quote.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it needs it.
std::string escape(std::string_view field);

void write_row(std::ostream& out, std::span<const std::string> fields);

}  // namespace cxr::csv
