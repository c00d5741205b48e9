#include "airm/graph.hpp"

#include <atomic>
#include <iostream>
#include <mutex>
#include <set>

namespace airm {

namespace graph_detail {

uint64_t next_id() {
    static std::atomic<uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

bool& grad_enabled_flag() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace graph_detail

void warn_once(const std::string& tag, const std::string& msg) {
    static std::mutex mu;
    static std::set<std::string> seen;
    std::lock_guard<std::mutex> lock(mu);
    if (seen.insert(tag).second) std::cerr << "[warn] " << msg << "\n";
}

}  // namespace airm
