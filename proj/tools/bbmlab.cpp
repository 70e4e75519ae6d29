#include <cstdio>
int main() { std::puts("bbmlab: placeholder"); return 0; }
