#include "ibm2/error.hpp"

namespace ibm2 {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::bad_magic: return "bad magic";
        case ErrorCode::version_mismatch: return "version mismatch";
        case ErrorCode::truncated_payload: return "truncated payload";
        case ErrorCode::label_out_of_range: return "label out of range";
        case ErrorCode::ragged_rows: return "ragged rows";
        case ErrorCode::non_numeric_cell: return "non-numeric cell";
        case ErrorCode::negative_label: return "negative label";
        case ErrorCode::zero_norm_row: return "zero-norm row";
        case ErrorCode::dimension_mismatch: return "dimension mismatch";
        case ErrorCode::index_out_of_bounds: return "index out of bounds";
        case ErrorCode::invalid_spec: return "invalid spec";
        case ErrorCode::invalid_config: return "invalid config";
        case ErrorCode::missing_file: return "missing file";
        case ErrorCode::io_failure: return "io failure";
        case ErrorCode::nan_loss: return "non-finite loss";
        case ErrorCode::insufficient_rows: return "insufficient rows";
        case ErrorCode::insufficient_classes: return "insufficient classes";
        case ErrorCode::empty_input: return "empty input";
    }
    return "unknown error";
}

} // namespace ibm2
