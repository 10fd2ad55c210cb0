#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "wmixnet/model_selection.hpp"
#include "wmixnet/network.hpp"

namespace wmixnet {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message);
  /// 1-based line number, or 0 when the error concerns the file as a whole.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct SpmOptions {
  bool symmetric = false;
  std::optional<std::size_t> n_override;  // must be >= the largest index seen
};

/// Reads the `.spm` edge list: "i j w [y_1 .. y_p]" per line, 1-based
/// indices, '#' comments and blank lines skipped. n is the largest index
/// unless overridden. With covariates every dyad must be listed.
Network parse_spm(std::istream& in, const SpmOptions& options = {});
Network parse_spm_text(std::string_view text, const SpmOptions& options = {});

/// Writes a network so that parse_spm reads it back exactly. Undirected
/// networks list each unordered dyad once. Without covariates, a zero-weight
/// line "1 n 0" is added when node n would otherwise not appear.
void write_spm(const Network& network, std::ostream& out);

/// 17 significant digits; Inf, -Inf and NaN spelled as R and Octave read them.
std::string format_number(double x);

enum class OutputFormat { text, r, octave };

/// text, R, matlab or octave (matlab and octave are the same writer).
OutputFormat parse_output_format(std::string_view name);

void write_output(const SweepResult& sweep, OutputFormat format, std::ostream& out);

}  // namespace wmixnet
