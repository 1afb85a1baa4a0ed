#pragma once

#include <stdexcept>
#include <string>

namespace benchstitch {

// Every library failure derives from Error. The CLI maps input-side kinds to
// exit code 2 and numerical kinds to exit code 3.
class Error : public std::runtime_error {
public:
    enum class Kind {
        parse,
        schema,
        validation,
        lookup,
        config,
        gauge,
        insufficient_data,
        singular,
        partition,
        protocol,
        io,
    };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

    bool numerical() const noexcept {
        return kind_ == Kind::gauge || kind_ == Kind::singular ||
               kind_ == Kind::insufficient_data || kind_ == Kind::partition;
    }

private:
    Kind kind_;
};

inline const char* to_string(Error::Kind kind) {
    switch (kind) {
        case Error::Kind::parse: return "parse";
        case Error::Kind::schema: return "schema";
        case Error::Kind::validation: return "validation";
        case Error::Kind::lookup: return "lookup";
        case Error::Kind::config: return "config";
        case Error::Kind::gauge: return "gauge";
        case Error::Kind::insufficient_data: return "insufficient_data";
        case Error::Kind::singular: return "singular";
        case Error::Kind::partition: return "partition";
        case Error::Kind::protocol: return "protocol";
        case Error::Kind::io: return "io";
    }
    return "unknown";
}

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& msg)
        : Error(Kind::parse, "line " + std::to_string(line) + ": " + msg), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

#define BENCHSTITCH_DEFINE_ERROR(Name, KindValue)                          \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& msg) : Error(Kind::KindValue, msg) {} \
    };

BENCHSTITCH_DEFINE_ERROR(SchemaError, schema)
BENCHSTITCH_DEFINE_ERROR(ValidationError, validation)
BENCHSTITCH_DEFINE_ERROR(LookupError, lookup)
BENCHSTITCH_DEFINE_ERROR(ConfigError, config)
BENCHSTITCH_DEFINE_ERROR(GaugeError, gauge)
BENCHSTITCH_DEFINE_ERROR(InsufficientDataError, insufficient_data)
BENCHSTITCH_DEFINE_ERROR(SingularError, singular)
BENCHSTITCH_DEFINE_ERROR(PartitionError, partition)
BENCHSTITCH_DEFINE_ERROR(ProtocolError, protocol)
BENCHSTITCH_DEFINE_ERROR(IoError, io)

#undef BENCHSTITCH_DEFINE_ERROR

}  // namespace benchstitch
