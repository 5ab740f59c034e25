#include "rokdeepc/config.hpp"
int main() { return 0; }
