#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace meshforge {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed OBJ / clog / camera-path text. `line` is 1-based, 0 if unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class InvalidMesh : public Error {
public:
    using Error::Error;
};

class EmptyMesh : public Error {
public:
    EmptyMesh() : Error("mesh has no vertices") {}
};

class ZeroAreaMesh : public Error {
public:
    ZeroAreaMesh() : Error("mesh has zero total surface area") {}
};

class DegenerateTriangle : public Error {
public:
    DegenerateTriangle() : Error("degenerate triangle") {}
};

class PairExplosion : public Error {
public:
    PairExplosion(std::size_t pairs, std::size_t vertices)
        : Error("pair threshold too large: more than " + std::to_string(pairs) + " non-edge pairs for "
                + std::to_string(vertices) + " vertices") {}
};

class DeadVertex : public Error {
public:
    explicit DeadVertex(std::size_t id) : Error("vertex " + std::to_string(id) + " is not alive") {}
};

class InconsistentLog : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    enum class Kind { VersionMismatch, ChecksumMismatch, Structure };
    FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

}  // namespace meshforge
