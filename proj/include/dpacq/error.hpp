#pragma once

#include <stdexcept>
#include <string>

namespace dpacq {

// Broad failure classes; the CLI maps them onto exit codes.
enum class ErrorKind { Usage, Data, Numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& code() const noexcept { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

#define DPACQ_DEFINE_ERROR(Name, Kind)                                     \
    class Name : public Error {                                            \
    public:                                                                \
        explicit Name(const std::string& message)                          \
            : Error(ErrorKind::Kind, #Name, message) {}                    \
    };

DPACQ_DEFINE_ERROR(UsageError, Usage)
DPACQ_DEFINE_ERROR(ConfigError, Usage)
DPACQ_DEFINE_ERROR(IoError, Data)
DPACQ_DEFINE_ERROR(FormatError, Data)
DPACQ_DEFINE_ERROR(BadHeader, Usage)
DPACQ_DEFINE_ERROR(RowCountMismatch, Data)
DPACQ_DEFINE_ERROR(NonFiniteValue, Data)
DPACQ_DEFINE_ERROR(DimensionMismatch, Data)
DPACQ_DEFINE_ERROR(MissingColumn, Data)
DPACQ_DEFINE_ERROR(TooFewPoints, Data)
DPACQ_DEFINE_ERROR(RankDeficient, Numeric)
DPACQ_DEFINE_ERROR(SolverSingular, Numeric)
DPACQ_DEFINE_ERROR(IllConditioned, Numeric)
DPACQ_DEFINE_ERROR(SingularConditioning, Numeric)
DPACQ_DEFINE_ERROR(RankTooLow, Numeric)

#undef DPACQ_DEFINE_ERROR

}  // namespace dpacq
