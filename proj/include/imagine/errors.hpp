#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace imagine {

// Base of every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class encode_error : public error {
public:
    encode_error(std::string field, std::uint64_t value)
        : error("encode: field '" + field + "' out of range (" + std::to_string(value) + ")"),
          field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class illegal_instruction : public error {
public:
    explicit illegal_instruction(unsigned code)
        : error("illegal instruction: unassigned opcode " + std::to_string(code)), code_(code) {}
    unsigned code() const noexcept { return code_; }

private:
    unsigned code_;
};

class assemble_error : public error {
public:
    assemble_error(int line, const std::string& what)
        : error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

class format_error : public error {
public:
    using error::error;
};
class layout_error : public error {
public:
    using error::error;
};
class unsupported_error : public error {
public:
    using error::error;
};
class config_error : public error {
public:
    using error::error;
};
class capacity_error : public error {
public:
    using error::error;
};
class load_error : public error {
public:
    using error::error;
};
class range_error : public error {
public:
    using error::error;
};
class timeout_error : public error {
public:
    using error::error;
};

// Raised by the simulator when the controller traps.
class trap_error : public error {
public:
    trap_error(std::uint64_t cycle, const std::string& what)
        : error("trap at cycle " + std::to_string(cycle) + ": " + what), cycle_(cycle) {}
    std::uint64_t cycle() const noexcept { return cycle_; }

private:
    std::uint64_t cycle_;
};

} // namespace imagine
