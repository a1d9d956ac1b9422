#pragma once

#include <array>
#include <string>
#include <string_view>

namespace eegconn {

enum class Task { nback, arithmetic, graphic };
enum class Gender { male, female };

// Ordered low < transition < high.
enum class CognitiveState { low = 0, transition = 1, high = 2 };

inline constexpr std::array<Task, 3> kAllTasks = {Task::nback, Task::arithmetic, Task::graphic};
inline constexpr std::array<CognitiveState, 3> kAllStates = {CognitiveState::low, CognitiveState::transition,
                                                            CognitiveState::high};
inline constexpr int kNumClasses = 3;

std::string_view to_string(Task t);
std::string_view to_string(Gender g);
std::string_view to_string(CognitiveState s);

// Throw DataError on unknown spellings.
Task parse_task(std::string_view s);
Gender parse_gender(std::string_view s);
CognitiveState parse_state(std::string_view s);

}  // namespace eegconn

#include <new>
#include <vector>

namespace eegconn {

// 64-byte aligned storage. Vectorized reductions peel a scalar head whose length
// depends on the pointer's alignment; a fixed alignment keeps results identical
// no matter where the heap places a buffer.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using AlignedVector = std::vector<double, AlignedAllocator<double>>;

}  // namespace eegconn
