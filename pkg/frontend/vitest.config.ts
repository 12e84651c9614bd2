import { defineConfig } from "vitest/config";

// The console tests talk to a live service process they spawn themselves,
// so the timeouts cover a cold policy-set build on first session create.
export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 60_000,
    hookTimeout: 90_000,
  },
});
