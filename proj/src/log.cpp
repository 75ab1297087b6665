#include "dpacq/log.hpp"

#include <iostream>
#include <utility>

namespace dpacq::log {
namespace {

Sink& sink() {
    static Sink s = [](const std::string& m) { std::cerr << "warning: " << m << '\n'; };
    return s;
}

bool& quiet_flag() {
    static bool q = false;
    return q;
}

}  // namespace

Sink set_warning_sink(Sink s) { return std::exchange(sink(), std::move(s)); }

void warn(const std::string& message) {
    if (sink()) sink()(message);
}

void info(const std::string& message) {
    if (!quiet_flag()) std::cerr << message << '\n';
}

void set_quiet(bool quiet) { quiet_flag() = quiet; }

}  // namespace dpacq::log
