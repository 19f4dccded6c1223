#include "hysmc/model.hpp"

#include <algorithm>

namespace hysmc {

namespace {

template <class Vec>
auto find_named(Vec& items, const std::string& name) -> decltype(&items.front()) {
  auto it = std::find_if(items.begin(), items.end(),
                         [&](const auto& item) { return item.name == name; });
  return it == items.end() ? nullptr : &*it;
}

}  // namespace

const Flow* Location::flow_for(const std::string& variable) const {
  auto it = std::find_if(flows.begin(), flows.end(),
                         [&](const Flow& f) { return f.variable == variable; });
  return it == flows.end() ? nullptr : &*it;
}

int HybridAutomaton::location_index(const std::string& location) const {
  for (size_t i = 0; i < locations.size(); ++i) {
    if (locations[i].name == location) return static_cast<int>(i);
  }
  return -1;
}

const Location* HybridAutomaton::find_location(const std::string& location) const {
  return find_named(locations, location);
}

const HybridAutomaton* NetworkModel::find_automaton(const std::string& n) const {
  return find_named(automata, n);
}
HybridAutomaton* NetworkModel::find_automaton(const std::string& n) {
  return find_named(automata, n);
}
const VarDecl* NetworkModel::find_variable(const std::string& n) const {
  return find_named(variables, n);
}
VarDecl* NetworkModel::find_variable(const std::string& n) { return find_named(variables, n); }
const ChannelDecl* NetworkModel::find_channel(const std::string& n) const {
  return find_named(channels, n);
}

}  // namespace hysmc
