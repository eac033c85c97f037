#ifndef OPO_NG_ERRORS_HPP
#define OPO_NG_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace opo_ng {

enum class Errc {
    AboveThreshold,
    NonPositiveRate,
    NotTuned,
    ZeroPump,
    UnsupportedChannel,
    QuadratureFailure,
    DegeneratePole,
    TrajectoryTooShort,
    DegenerateVariance,
    ParseError,
    EmptyDataset,
    NonConvergence,
    InvalidArgument,
};

constexpr std::string_view to_string(Errc e) {
    switch (e) {
        case Errc::AboveThreshold: return "AboveThreshold";
        case Errc::NonPositiveRate: return "NonPositiveRate";
        case Errc::NotTuned: return "NotTuned";
        case Errc::ZeroPump: return "ZeroPump";
        case Errc::UnsupportedChannel: return "UnsupportedChannel";
        case Errc::QuadratureFailure: return "QuadratureFailure";
        case Errc::DegeneratePole: return "DegeneratePole";
        case Errc::TrajectoryTooShort: return "TrajectoryTooShort";
        case Errc::DegenerateVariance: return "DegenerateVariance";
        case Errc::ParseError: return "ParseError";
        case Errc::EmptyDataset: return "EmptyDataset";
        case Errc::NonConvergence: return "NonConvergence";
        case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace opo_ng

#endif
