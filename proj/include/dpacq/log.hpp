#pragma once

#include <functional>
#include <string>

namespace dpacq::log {

using Sink = std::function<void(const std::string&)>;

// Replaces the warning sink and returns the previous one. Default writes to stderr.
Sink set_warning_sink(Sink sink);

void warn(const std::string& message);
void info(const std::string& message);

// Silences info() output (warnings still go to the sink).
void set_quiet(bool quiet);

}  // namespace dpacq::log
