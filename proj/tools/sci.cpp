#include "sci/cli.hpp"

int main(int argc, char** argv) { return sci::run(argc, argv); }
