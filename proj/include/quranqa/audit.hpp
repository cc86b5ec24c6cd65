#pragma once

#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace quranqa {

// Warning sink shared across pipeline stages. Appends are thread-safe so
// concurrent extraction workers can log through one instance.
class AuditLog {
 public:
  void append(std::string message) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_.push_back(std::move(message));
  }

  std::vector<std::string> snapshot() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
  }

  bool empty() const { return size() == 0; }

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> entries_;
};

inline void audit(AuditLog* log, std::string message) {
  if (log != nullptr) log->append(std::move(message));
}

}  // namespace quranqa
