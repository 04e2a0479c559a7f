#include "tracelam/symbol.hpp"

#include <atomic>
#include <deque>
#include <mutex>
#include <unordered_map>

namespace tracelam {

namespace {

// deque keeps references to stored names stable across growth
struct Interner {
  std::mutex mu;
  std::deque<std::string> names;
  std::unordered_map<std::string, Symbol> ids;
};

Interner& interner() {
  static Interner* it = new Interner();
  return *it;
}

}  // namespace

Symbol intern(std::string_view name) {
  Interner& it = interner();
  std::lock_guard<std::mutex> lock(it.mu);
  auto found = it.ids.find(std::string(name));
  if (found != it.ids.end()) return found->second;
  Symbol sym = static_cast<Symbol>(it.names.size());
  it.names.emplace_back(name);
  it.ids.emplace(it.names.back(), sym);
  return sym;
}

const std::string& symbol_name(Symbol sym) {
  Interner& it = interner();
  std::lock_guard<std::mutex> lock(it.mu);
  return it.names.at(sym);
}

Symbol fresh_runtime_name() {
  static std::atomic<std::uint64_t> counter{0};
  return intern("%r" + std::to_string(counter.fetch_add(1)));
}

}  // namespace tracelam
