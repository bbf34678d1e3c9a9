#pragma once

#include <stdexcept>
#include <string>

namespace ibm2 {

// Every failure mode that callers may want to distinguish gets its own code.
enum class ErrorCode {
    bad_magic,
    version_mismatch,
    truncated_payload,
    label_out_of_range,
    ragged_rows,
    non_numeric_cell,
    negative_label,
    zero_norm_row,
    dimension_mismatch,
    index_out_of_bounds,
    invalid_spec,
    invalid_config,
    missing_file,
    io_failure,
    nan_loss,
    insufficient_rows,
    insufficient_classes,
    empty_input,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace ibm2
