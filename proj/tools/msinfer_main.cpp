#include <msinfer/kernel.hpp>

int main() { return 0; }
