#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace floornav {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A room name that does not resolve against the graph.
class UnknownRoomError : public Error {
 public:
  explicit UnknownRoomError(std::string room)
      : Error("unknown room: " + room), room_(std::move(room)) {}
  UnknownRoomError(std::string room, const std::string& context)
      : Error("unknown room: " + room + " (" + context + ")"), room_(std::move(room)) {}
  const std::string& room() const { return room_; }

 private:
  std::string room_;
};

/// Input file missing or malformed. Carries one diagnostic per bad record.
class IngestError : public Error {
 public:
  IngestError(const std::string& what, std::vector<std::string> diagnostics = {})
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

}  // namespace floornav
