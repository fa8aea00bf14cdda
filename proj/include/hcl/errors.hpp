#pragma once

#include <stdexcept>
#include <string>

namespace hcl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DisconnectedNetwork : public Error {
public:
    DisconnectedNetwork() : Error("disconnected network") {}
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Coincident points where a bearing term divides by a distance.
class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

/// Zero range on an edge that also carries a bearing.
class DegenerateMeasurement : public Error {
public:
    using Error::Error;
};

class Divergence : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

} // namespace hcl
