import { defineConfig } from "vitest/config";

export default defineConfig({
  resolve: {
    // NodeNext-style ".js" specifiers in TS sources
    alias: [{ find: /^(\.{1,2}\/.*)\.js$/, replacement: "$1" }],
  },
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    setupFiles: ["tests/setup.ts"],
    testTimeout: 30_000,
    hookTimeout: 180_000,
  },
});
