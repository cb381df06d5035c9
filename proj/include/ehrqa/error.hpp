#pragma once
// Exception hierarchy shared by every module.

#include <stdexcept>
#include <string>

namespace ehrqa {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed text input: triple files, program text, log files.
class ParseError : public Error {
public:
    ParseError(int line, int column, const std::string& what)
        : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

class TypeError : public Error {
public:
    TypeError(int step, int arg, const std::string& what)
        : Error("step " + std::to_string(step) + ", argument " + std::to_string(arg) + ": " + what),
          step_(step), arg_(arg) {}

    int step() const noexcept { return step_; }
    int arg() const noexcept { return arg_; }

private:
    int step_;
    int arg_;
};

// Raised inside the interpreter; exec_program converts it into an error trace.
class RuntimeError : public Error {
public:
    using Error::Error;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

class DecodeError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class MetricError : public Error {
public:
    using Error::Error;
};

class BuildError : public Error {
public:
    using Error::Error;
};

}  // namespace ehrqa
