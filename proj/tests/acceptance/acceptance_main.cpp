// Acceptance suite: one pass/fail line per criterion. Placeholder during
// bring-up; filled in below.
#include <cstdio>

int main() {
  std::puts("acceptance: pending");
  return 1;
}
