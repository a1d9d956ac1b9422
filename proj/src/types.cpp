#include "eegconn/types.hpp"

#include "eegconn/errors.hpp"

namespace eegconn {

std::string_view to_string(Task t) {
  switch (t) {
    case Task::nback: return "nback";
    case Task::arithmetic: return "arithmetic";
    case Task::graphic: return "graphic";
  }
  return "?";
}

std::string_view to_string(Gender g) { return g == Gender::male ? "male" : "female"; }

std::string_view to_string(CognitiveState s) {
  switch (s) {
    case CognitiveState::low: return "low";
    case CognitiveState::transition: return "transition";
    case CognitiveState::high: return "high";
  }
  return "?";
}

Task parse_task(std::string_view s) {
  for (Task t : kAllTasks) {
    if (to_string(t) == s) return t;
  }
  throw DataError("unknown task '" + std::string(s) + "'");
}

Gender parse_gender(std::string_view s) {
  if (s == "male") return Gender::male;
  if (s == "female") return Gender::female;
  throw DataError("unknown gender '" + std::string(s) + "'");
}

CognitiveState parse_state(std::string_view s) {
  for (CognitiveState c : kAllStates) {
    if (to_string(c) == s) return c;
  }
  throw DataError("unknown cognitive state '" + std::string(s) + "'");
}

}  // namespace eegconn
