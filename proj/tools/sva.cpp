#include <cstdio>
int main() { std::puts("sva"); return 0; }
