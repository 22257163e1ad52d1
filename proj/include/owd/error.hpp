#pragma once

#include <stdexcept>
#include <string>

namespace owd {

enum class Errc {
    non_finite_value,
    shape_mismatch,
    window_too_large,
    invalid_param,
    dimension_mismatch,
    incompatible_codes,
    empty_cluster,
    invalid_percentile,
    too_many_clusters,
    empty_input,
    too_few_clusters,
    single_class_input,
    class_index_out_of_range,
    empty_labeled_set,
    length_mismatch,
    empty_partition,
    no_clusters,
    invalid_spec,
    missing_config_echo,
    bad_magic,
    version_unsupported,
    truncated_payload,
    duplicate_index,
    missing_index,
    parse_error,
    unknown_key,
    type_error,
    io_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace owd
