#include <iostream>
int main() { std::cout << "dcp\n"; return 0; }
